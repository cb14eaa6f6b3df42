"""Certified upper bounds on maximal Lyapunov exponents of polynomial ODEs."""
