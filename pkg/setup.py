"""Setup script for pareto-bandits package."""
from setuptools import setup, find_packages
from pathlib import Path

def setuptools_glob_workaround(package_name, glob):
    # https://stackoverflow.com/q/27664504/9118363
    package_path = Path(f'./{package_name}').resolve()
    return [str(path.relative_to(package_path)) for path in package_path.glob(glob)]

install_requires = [
    "numpy",
    "scipy",
    "pandas",
    "tqdm",

    # Charts
    "matplotlib",
]

extras_require = {
    "test":  [
        "pytest",
    ]
}

entry_points = {
    "console_scripts": ["pareto-bandits = pareto_bandits.__main__:main"]
}

package_data = {
    "pareto_bandits": setuptools_glob_workaround("pareto_bandits", "data/*.json")
}

setup(
    name="pareto-bandits",
    version="0.1",
    description="LinUCB++ model selection for linear bandits, with baselines, lower-bound instances and experiments",
    install_requires=install_requires,
    extras_require=extras_require,
    entry_points=entry_points,
    packages=find_packages(include=["pareto_bandits*"]),
    package_data=package_data,
)
