#!/usr/bin/env python
"""pcombine package installer."""
from __future__ import annotations

from setuptools import setup
setup()
