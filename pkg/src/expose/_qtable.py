"""Critical values q_alpha for the Nemenyi test, k = 2..10 algorithms.

Each entry is the upper-alpha quantile of the studentized range distribution
with k groups and infinite degrees of freedom, divided by sqrt(2), rounded to
three decimals. Generated with::

    from scipy.stats import studentized_range
    round(studentized_range.ppf(1 - alpha, k, 1e6) / 2 ** 0.5, 3)

The published two-tailed Nemenyi table (Demsar, JMLR 7, 2006) differs from
these in the last digit at three entries (2.343 for k=3 and 2.949 for k=7 at
alpha=0.05, 2.459 for k=5 at alpha=0.10).
"""

Q_ALPHA = {
    0.05: {2: 1.960, 3: 2.344, 4: 2.569, 5: 2.728, 6: 2.850, 7: 2.948, 8: 3.031, 9: 3.102, 10: 3.164},
    0.10: {2: 1.645, 3: 2.052, 4: 2.291, 5: 2.460, 6: 2.589, 7: 2.693, 8: 2.780, 9: 2.855, 10: 2.920},
}
