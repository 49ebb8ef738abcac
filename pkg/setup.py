from setuptools import setup

setup(
    name='ttl_agent',
    version='0.1.0',
    packages=['ttl_agent', 'scripts'],
    include_package_data=True,
    install_requires=[
        'numpy',
        'matplotlib',
        'lark',
        'pandas>=1.5',
    ],
    extras_require={
        'dev': ['pytest', 'hypothesis'],
    },
    entry_points={
        'console_scripts': [
            'ttl_agent=scripts.run_ttl_agent:main',
        ],
    },
    author='Fifi ADODO',
    author_email='fidel999@yahoo.fr',
    description='Task Temporal Logic toolkit: parser, finite-trace semantics, LTLf translations, '
                'a symbolic task module and a gridworld for instruction-following agents.',
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    classifiers=[
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
    ],
    python_requires='>=3.9',
)
