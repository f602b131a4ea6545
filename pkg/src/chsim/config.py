from chsim.settings import Settings


def get_settings() -> Settings:
    return Settings()
