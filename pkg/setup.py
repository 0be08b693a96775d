from setuptools import setup, find_packages

setup(
    name="sparsebound",
    version="0.1.0",
    description="Variance lower bounds and reference estimators for the sparse linear model",
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "sortedcontainers",
        "jsonschema>=3.2",
    ],
    extras_require={
        "test": ["pytest"],
    },
    packages=find_packages('src'),
    package_dir={'':'src'},
    entry_points={
    'console_scripts': [
        'sparsebound=sparsebound.cli:main',
    ]}
)
