"""Numerical core: graphs, priors, bridge and moment solvers, brute-force oracle"""
