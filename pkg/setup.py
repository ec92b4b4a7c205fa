"""
Setup script for the sparse wideband array designer
"""
from pathlib import Path

from setuptools import setup


def read_requirements():
    """Runtime requirements, without the test-only packages"""
    lines = Path(__file__).with_name("requirements.txt").read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip() and not line.startswith(("#", "pytest"))]


setup(
    name="sparse-wideband-array",
    version="1.0.0",
    description="Sparse wideband TDL array design by reweighted group-sparse SOCP, with a GA baseline",
    long_description=Path(__file__).with_name("README.md").read_text(encoding="utf-8"),
    long_description_content_type="text/markdown",
    python_requires=">=3.9",
    py_modules=[
        "array_model",
        "reference_response",
        "socp",
        "design_cs",
        "ga_baseline",
        "evaluation",
        "config",
        "storage",
        "executor",
        "main",
        "utils",
    ],
    install_requires=read_requirements(),
    extras_require={"test": ["pytest>=7.4"]},
    entry_points={"console_scripts": ["sparse-array=main:main"]},
)
