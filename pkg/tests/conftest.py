# Ensures this directory is importable (helpers, reference_interpreter).
