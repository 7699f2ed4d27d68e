def test_import():
    """Test that the package can be imported."""
    import gridcharge

    assert isinstance(gridcharge.__version__, str)
    assert gridcharge.Context.get_instance(0) is not None
