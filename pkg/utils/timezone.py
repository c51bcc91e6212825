#!/usr/bin/env python3
"""
Timezone Utility Module

Report timestamps are always written in UTC so runs from different
machines compare cleanly. pytz provides the zone object.
"""

from datetime import datetime

import pytz

# ============================================================================
# TIMEZONE DEFINITIONS SECTION
# ============================================================================

UTC = pytz.utc


def get_current_time():
    """Get current time in UTC"""
    return datetime.now(UTC)


def report_timestamp():
    """ISO-8601 timestamp embedded in every report, e.g. 2025-01-31T08:00:00+00:00"""
    return get_current_time().isoformat(timespec="seconds")
