from setuptools import setup, find_packages

# Read long_description from file
try:
    long_description = open('README.md', 'r').read()
except:
    long_description = ('A numerical lab for periodic homogenization of'
                        ' strain-gradient viscoelastic solids.')

setup(name='homlab',
      version='0.1',
      description=('Numerical experiments for the homogenization of'
                   ' perforated strain-gradient viscoelastic solids'),
      long_description=long_description,
      long_description_content_type='text/markdown',
      classifiers = [
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3'
      ],
      license='MIT',
      packages=find_packages(exclude=['tests']),
      python_requires='>=3.7',
      install_requires=[
          'numpy',
          'pytz',
          'pyyaml',
          'scipy',
          'shapely'
      ],
      extras_require={
          'test': [
              'hypothesis',
              'pytest'
          ]
      },
      include_package_data=True,
      package_data={
          'homlab': ['files/*.yml']
      },
      entry_points={
          'console_scripts' : [
              'homlab = homlab.lab.__main__:main'
          ]
      },
      zip_safe=False)
