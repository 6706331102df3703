from hypothesis import HealthCheck, settings

# The exact oracles run max-flow or LP solves per example; keep runs short.
settings.register_profile(
    "balroute",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile("balroute")
