import setuptools

setuptools.setup(
    packages=setuptools.find_packages(include=['fatiguekit']),
    package_data={'fatiguekit': ['data/*.json']},
    install_requires=["numpy", "scipy", "networkx", "pulp", "openpyxl"],
    entry_points={
        'console_scripts': ['fatiguekit = fatiguekit.cli:main'],
    },
)
