from hypothesis import settings

settings.register_profile("lab", deadline=None, max_examples=25)
settings.load_profile("lab")
