"""
Setup script for triplewave.
This allows the toolkit to be installed using pip.
"""

from setuptools import setup, find_packages
import os

# Get the directory containing setup.py
setup_dir = os.path.dirname(os.path.abspath(__file__))

# Read README.md from the same directory as setup.py
with open(os.path.join(setup_dir, "README.md"), "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="triplewave",
    version="0.1.0",
    description="Numerical toolkit for triple interactions of conormal waves",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(include=["triplewave", "triplewave.*"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.8",
    install_requires=[
        "click>=8.0.0",
        "pyyaml>=5.1",
        "numpy>=1.21",
        "scipy>=1.7",
        "pytest>=7.0.0",
    ],
    entry_points={
        "console_scripts": [
            "triplewave=triplewave.cli.cli:main",
        ],
    },
)
