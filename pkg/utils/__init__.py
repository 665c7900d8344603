"""Logging and artifact export helpers"""
