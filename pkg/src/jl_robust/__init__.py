"""jl-robust package.

Robust SVM and k-center clustering with outliers through Johnson-Lindenstrauss
projections, with sparse recovery of the solution in the original space.
"""

__author__ = """Jongsu Liam Kim"""
__email__ = 'jongsukim8@gmail.com'
__version__ = '0.1.0'
