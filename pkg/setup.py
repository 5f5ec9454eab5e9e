#! /usr/bin/env python3
import os
import re
from setuptools import setup


REQUIREMENTS = [
    'attrs',
    'Babel',
    'mpmath',
    'numpy',
    'scipy',
    'tomli; python_version < "3.11"',
]


def read_version():
    path = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'momentlimits', '__init__.py')
    with open(path) as f:
        return re.search(r"^__version__ = '([^']+)'", f.read(), re.M).group(1)


setup(
    name='momentlimits',
    version=read_version(),
    install_requires=REQUIREMENTS,
    python_requires='>=3.8',
    url='',
    license='BSD',
    description='Quantum and classical precision limits for generalized moments of subdiffraction objects.',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: BSD License',
        'Operating System :: OS Independent',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Physics',
    ],
    packages=[
        'momentlimits',
        'momentlimits.fields',
    ],
    package_data={
        'momentlimits': ['locale/*/*/*'],
    },
    entry_points={
        'console_scripts': [
            'momentlimits = momentlimits.cli:main',
        ],
    },
    test_suite='tests.runtests',
)
