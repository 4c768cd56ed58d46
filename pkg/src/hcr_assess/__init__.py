"""Country-level research assessment from highly cited researcher rosters.

Aggregates researcher rosters and institution percentile counts to country
level, correlates indicators, extrapolates strict-tier counts from
lenient-tier counts, and produces normalized country rankings.
"""

__version__ = "0.1.0"
