"""Consistent histories toolkit: properties, frameworks, measurements, histories and valuations."""

import logging

logging.getLogger(__name__).addHandler(logging.NullHandler())
