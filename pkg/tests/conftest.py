from .fixtures import (ball_domain, exterior_field, halfspace_field, params,
                       radial_run, radial_schedule, scenario_file,
                       two_ball_domain)


def pytest_addoption(parser):
    parser.addoption("--slow",
                     action="store_true",
                     default=False,
                     dest='slow',
                     help="Run the slow tests: refinement studies and " +
                     "axisymmetric bracketed solves.")


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: refinement studies and axisymmetric solves')
    if not config.option.slow:
        setattr(config.option, 'markexpr', 'not slow')
