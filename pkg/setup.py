"""Setup configuration for spin-decohere."""

from setuptools import find_packages, setup

setup(
    name="spin-decohere",
    version="0.1.0",
    packages=find_packages(exclude=["tests"]),
    install_requires=[
        "click",
        "pyyaml",
        "rich",
        "numpy",
        "scipy",
    ],
    entry_points={
        "console_scripts": [
            "spin-decohere=spin_decohere.cli:cli",
        ],
    },
    description="Central-spin decoherence simulator and propagator benchmark",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    classifiers=[
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Physics",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.9",
)
