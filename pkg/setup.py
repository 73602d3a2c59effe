from pathlib import Path

from setuptools import find_packages, setup

here = Path(__file__).parent
requirements = [
    line.strip()
    for line in (here / "requirements.txt").read_text(encoding="utf-8").splitlines()
    if line.strip() and not line.startswith("#") and not line.startswith("pytest")
]

setup(
    name="algoc",
    version="0.1.0",
    description="Optimal control on almost Lie algebroids: transport, extremals, needle cones",
    long_description=(here / "docs" / "README.md").read_text(encoding="utf-8"),
    long_description_content_type="text/markdown",
    package_dir={"": "src"},
    packages=find_packages("src"),
    python_requires=">=3.9",
    install_requires=requirements,
    extras_require={"test": ["pytest>=7.4.0", "pytest-cov>=4.1.0"]},
    entry_points={"console_scripts": ["algoc=algoc.app:main"]},
)
