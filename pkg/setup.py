from setuptools import setup

setup(
    name='YamabeLab',
    version='1.0.0-beta1',
    description='Numerical lab for singular Yamabe metrics: conformal curvature, '
                'closed-form metrics, Newton solvers on exhaustions and blow-up probes.',
    packages=['YamabeLab',],
    test_suite='tests',
    python_requires='>=3.8',
    install_requires=['numpy', 'scipy>=1.12', 'matplotlib', 'bitarray',
                      'tomli; python_version<"3.11"'],
    tests_require=['pytest', 'mock'],
    entry_points={
        'console_scripts': ['yamabe-lab = YamabeLab.apps:entry_point'],
    },
)
