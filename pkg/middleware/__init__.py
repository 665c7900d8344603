"""Input validation and error-to-exit-code mapping"""
