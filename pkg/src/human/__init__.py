"""Human opinion distributions and human baselines."""
