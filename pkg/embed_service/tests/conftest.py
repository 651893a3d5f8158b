import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent

# the reusable wire-protocol conformance suite ships with the client
# package's tests; make it importable from here as well
CLIENT_TESTS = HERE.parent.parent / "tests"
for p in (str(HERE), str(CLIENT_TESTS)):
    if p not in sys.path:
        sys.path.insert(0, p)
