import logging

from gridcharge.util._logging import Formatter, log_file, preserve_log_level, setup


def record(name, func, msg, level=logging.INFO):
    return logging.LogRecord(name, level, __file__, 1, msg, None, None, func=func)


def test_formatter():
    f = Formatter()
    f.colours = ("", "", "")

    assert "model.ucp.solve_ucp  Solved" == f.format(
        record("gridcharge.model.ucp", "solve_ucp", "Solved")
    )
    # Same module: abbreviated
    assert "  ...build_ucp  Built" == f.format(
        record("gridcharge.model.ucp", "build_ucp", "Built")
    )
    # Warnings carry their level; other packages keep their full name
    assert "numpy.foo  WARNING Careful" == f.format(
        record("numpy", "foo", "Careful", logging.WARNING)
    )


def test_setup(caplog):
    log = logging.getLogger("gridcharge.model")
    with preserve_log_level():
        setup(level="DEBUG", console=False)
        log.debug("Visible")
        assert ["Visible"] == caplog.messages

        setup(level="WARNING", console=False)
        log.info("Hidden")
        assert ["Visible"] == caplog.messages

    setup(console=False)


def test_log_file(tmp_path):
    log = logging.getLogger("gridcharge.harness")
    path = tmp_path.joinpath("out", "montecarlo.log")
    handlers = list(logging.getLogger("gridcharge").handlers)

    with preserve_log_level():
        setup(level="INFO", console=False)
        with log_file(path) as p:
            assert path == p
            log.info("Run 0: written")
            log.debug("Below the logger level")
        log.info("After the block")

    setup(console=False)

    text = path.read_text()
    assert "INFO    gridcharge.harness  Run 0: written" in text
    assert "Below the logger level" not in text
    assert "After the block" not in text
    assert handlers == logging.getLogger("gridcharge").handlers


def test_preserve_log_level():
    log = logging.getLogger("gridcharge")
    level = log.level

    with preserve_log_level():
        log.setLevel(logging.ERROR)

    assert level == log.level
