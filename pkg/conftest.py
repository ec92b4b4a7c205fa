# Puts the top-level modules on sys.path for the test suite.
