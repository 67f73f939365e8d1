"""Linear programs for distributing joint torques among muscles."""

import logging

from pulp import (PULP_CBC_CMD, LpMinimize, LpProblem, LpStatus,
                  LpStatusOptimal, LpVariable, lpSum)

from fatiguekit.basics import ConfigurationError

logger = logging.getLogger(__name__)

MINMAX_SLACK = 1e-9
"""Relative slack on the optimal peak load while breaking ties."""


class MinMaxRecruitment(LpProblem):
    """Min-max recruitment: find muscle forces that balance the torque at
    every joint while keeping the largest relative load F_Load / MVC as small
    as possible. Ties are then broken by the smallest total relative load, so
    the answer is unique whenever the muscles are not redundant.

    :param profile: a WorkerProfile
    :param joint_torques: dict of joint name to torque in N m, all >= 0
    """

    def __init__(self, profile, joint_torques, name=None):
        if name is None:
            name = "MinMaxRecruitment"
        super().__init__(name, LpMinimize)
        self._profile = profile
        self._torques = {joint: float(joint_torques.get(joint, 0.0))
                         for joint in profile.joints}
        self._built = False

        """Map from muscle_id to the force variable of that muscle."""
        self._forces = None
        """The largest relative load, as a variable."""
        self._peak = None

    @property
    def torques(self):
        return dict(self._torques)

    def _make_variables(self):
        """Makes one force variable per muscle, plus the peak variable."""
        if self._forces is not None:
            return
        self._forces = {}
        for index, muscle in enumerate(self._profile.muscles):
            self._forces[muscle.muscle_id] = LpVariable(f"f_{index}",
                                                        lowBound=0)
        self._peak = LpVariable("peak", lowBound=0)

    def _make_equilibrium_constraints(self):
        """The muscles spanning a joint must together produce its torque."""
        for index, joint in enumerate(self._profile.joints):
            terms = [muscle.moment_arms[joint] * self._forces[muscle.muscle_id]
                     for muscle in self._profile.muscles
                     if joint in muscle.moment_arms]
            if not terms:
                if self._torques[joint] > 0:
                    raise ConfigurationError("no muscle spans joint %s, which "
                                             "carries %g N m"
                                             % (joint, self._torques[joint]))
                continue
            self += (lpSum(terms) == self._torques[joint],
                     f"equilibrium_{index}")

    def _make_peak_constraints(self):
        """Every relative load is bounded by the peak."""
        for index, muscle in enumerate(self._profile.muscles):
            force = self._forces[muscle.muscle_id]
            self += (force <= muscle.params.mvc * self._peak, f"peak_{index}")

    def _relative_total(self):
        return lpSum(self._forces[muscle.muscle_id] / muscle.params.mvc
                     for muscle in self._profile.muscles)

    def build_model(self):
        """Build the model."""
        if self._built:
            return
        self._make_variables()
        self._make_equilibrium_constraints()
        self._make_peak_constraints()
        self += self._peak
        self._built = True

    def _solve_once(self):
        super().solve(PULP_CBC_CMD(msg=False))
        if self.status != LpStatusOptimal:
            raise ConfigurationError("muscle recruitment is %s for torques %r"
                                     % (LpStatus[self.status], self._torques))

    def solve(self):
        """Solves the problem and returns the force of every muscle.

        :rtype: dict of muscle_id to newtons
        """
        if all(torque == 0 for torque in self._torques.values()):
            return {muscle.muscle_id: 0.0 for muscle in self._profile.muscles}
        self.build_model()
        self._solve_once()
        peak = self._peak.varValue
        self += (self._peak <= peak * (1 + MINMAX_SLACK) + MINMAX_SLACK,
                 "peak_fixed")
        self.setObjective(self._relative_total())
        self._solve_once()
        logger.debug("recruitment peak relative load %g", peak)
        # Solvers can return tiny negative values for zero variables.
        return {muscle_id: max(0.0, variable.varValue)
                for muscle_id, variable in sorted(self._forces.items())}
