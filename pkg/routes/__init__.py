"""Command modules: solve, verify, prior-info"""
