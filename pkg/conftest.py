"""
pytest configuration
Runs every test under the testing configuration and keeps hypothesis fast
and reproducible.
"""
import os
import sys

from hypothesis import settings

ROOT = os.path.dirname(os.path.abspath(__file__))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

os.environ.setdefault('NETBRIDGE_ENV', 'testing')

settings.register_profile('netbridge', max_examples=30, deadline=None, derandomize=True)
settings.load_profile('netbridge')
