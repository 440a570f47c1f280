# Test suite for mural. Slow statistical runs are marked ``slow``.
