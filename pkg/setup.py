#!/usr/bin/env python

from setuptools import setup, find_packages


setup(
    name='MFKDA',
    version='0.1',
    description='Multiple feature-kernel learning with domain adaptation '
                'for cross-domain face recognition (MFKDA)',
    package_data={
        'mfkda': ['profiles/*.yaml']
    },
    packages=find_packages(),
    python_requires=">=3.6",
    install_requires=["numpy>=1.13.0", "scipy>=1.0.0", "h5py>=2.7.0",
                      "PyYAML>=3.12", "Pillow>=5.0.0",
                      "scikit-image>=0.14.0"],
    extras_require={
        "jl": ["joblib>=0.11"],
    },
    entry_points={
        'console_scripts': ['mfkda=mfkda.pipeline.cli:main'],
    }
)
