from hypothesis import HealthCheck, settings

# Reduction of generated terms can take longer than hypothesis' default deadline
settings.register_profile("lsq", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lsq")
