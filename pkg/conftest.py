pytest_plugins = ["gridcharge.testing"]
