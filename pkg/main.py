#!/usr/bin/env python3
"""
MixConf Experiments - Main Entry Point

It handles:
- Environment variable loading (.env)
- Logging setup
- Harness creation and experiment dispatch
- Exit codes and machine-readable errors

Exit codes: 0 success, 2 invalid configuration or usage, 1 any other
failure, 130 interrupted. Every failure also writes one JSON line
{"error": <kind>, "message": <text>} to stderr.
"""

import json
import logging
import os
import sys

from dotenv import load_dotenv

# ============================================================================
# ENVIRONMENT SETUP SECTION
# ============================================================================

# Must run before the harness reads any MIXCONF_* variable
load_dotenv()

# ============================================================================
# LOGGING CONFIGURATION SECTION
# ============================================================================

logging.basicConfig(
    level=os.getenv("LOG_LEVEL", "INFO").upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INTERRUPTED = 130


def emit_error(kind: str, message: str):
    """Write the machine-readable error line to stderr"""
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    sys.stderr.flush()


# ============================================================================
# MAIN FUNCTION SECTION
# ============================================================================

def main(argv=None) -> int:
    """
    Run one experiment from the command line

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])

    Returns:
        int: Process exit code
    """
    from harness import create_harness
    from mixconf.errors import ConfigError, MixConfError

    try:
        harness = create_harness()
        path = harness.run(argv)
        logger.info(f"✅ Done: {path}")
        return EXIT_OK

    # ============================================================================
    # ERROR HANDLING SECTION
    # ============================================================================

    except ConfigError as e:
        logger.error(f"❌ Invalid configuration: {e}")
        emit_error(e.kind, str(e))
        return EXIT_CONFIG

    except MixConfError as e:
        logger.error(f"❌ Experiment failed ({e.kind}): {e}")
        emit_error(e.kind, str(e))
        return EXIT_FAILURE

    except KeyboardInterrupt:
        logger.info("👋 Stopped by user (Ctrl+C)")
        emit_error("interrupted", "stopped by user")
        return EXIT_INTERRUPTED

    except SystemExit as e:
        # argparse --help
        return e.code if isinstance(e.code, int) else EXIT_OK

    except Exception as e:
        logger.error(f"❌ Fatal error: {e}", exc_info=True)
        emit_error("internal_error", str(e))
        return EXIT_FAILURE


# ============================================================================
# ENTRY POINT SECTION
# ============================================================================

if __name__ == '__main__':
    sys.exit(main())
