"""
dyncache: coded caching with shared caches for dynamic multi-antenna networks
"""

from setuptools import setup, find_packages


setup(
    name='dyncache',
    version='0.1.0',
    description='dyncache plans, verifies and evaluates shared-cache coded caching delivery for multi-antenna downlinks',
    long_description=open('README.rst').read(),
    license='MIT',
    packages=find_packages(include=['dyncache', 'dyncache.*']),
    python_requires='>=3.11',
    install_requires=[
        'numpy>=1.24',
        'click>=8.1',
    ],
    extras_require={
        'tests': ['pytest>=7', 'hypothesis>=6.80', 'scipy>=1.10'],
    },
    entry_points={
        'console_scripts': ['dyncache=dyncache.cli:cli_entry'],
    },
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering',
        'Topic :: System :: Networking'
    ]
)
