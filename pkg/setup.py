from setuptools import setup, find_packages

setup(
    name="csnet-sim",
    version="0.1.0",
    packages=find_packages(exclude=["test", "test.*", "alembic", "alembic.*"]),
    entry_points={"console_scripts": ["csnet = csnet.cli:main"]},
    python_requires=">=3.10",
)
