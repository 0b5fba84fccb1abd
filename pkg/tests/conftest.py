from hypothesis import settings

# Derandomized so the suite is reproducible run to run.
settings.register_profile("repro", deadline=None, derandomize=True, max_examples=100)
settings.load_profile("repro")
