import contextlib
import os
import pathlib
import subprocess
import sys
import threading
import time

from ruamel.yaml import YAML

from dsubgrad.constants import CSV_FLOAT_FORMAT, DEFAULT_OUTPUT_DIRECTORY

# environment variable overrides
DSUBGRAD_OUTPUT_DIR = os.getenv("DSUBGRAD_OUTPUT_DIR", None)

# Create a ruamel object with our favored config, for universal use
yaml = YAML()
yaml.preserve_quotes = True
yaml.default_flow_style = False


@contextlib.contextmanager
def timer(logger, prefix):
    start_time = time.time()
    yield
    logger.info(f"{prefix} took {time.time() - start_time:.3f} [s]")


def load_yaml(config_filename: pathlib.Path):
    """
    Return yaml dict containing config loaded from config_filename.
    """
    with config_filename.open() as f:
        config = yaml.load(f.read())

    return config


def bundled_config_directory() -> pathlib.Path:
    import dsubgrad

    return pathlib.Path(dsubgrad.__file__).parent / "configs"


def resolve_config_path(name_or_path) -> pathlib.Path:
    """Accept either a path to a yaml file or the name of a bundled config."""
    config_filename = pathlib.Path(name_or_path)
    if config_filename.is_file():
        return config_filename

    bundled = bundled_config_directory() / f"{name_or_path}.yaml"
    if bundled.is_file():
        return bundled

    raise ValueError(
        f"passed in configuration filename={config_filename} must exist or name a bundled config"
    )


def output_directory(cli_value=None, config_value=None) -> pathlib.Path:
    """CLI flag first, then DSUBGRAD_OUTPUT_DIR, then the config entry."""
    directory = (
        cli_value
        or os.getenv("DSUBGRAD_OUTPUT_DIR", DSUBGRAD_OUTPUT_DIR)
        or config_value
        or DEFAULT_OUTPUT_DIRECTORY
    )
    return pathlib.Path(directory)


def format_float(value) -> str:
    return format(float(value), CSV_FLOAT_FORMAT)


def run_subprocess_cmd(processargs, timeout=None, **kwargs):
    """Runs subprocess command with realtime stdout logging with optional line prefix.

    A process still running after `timeout` seconds is killed and its
    (negative) return code is returned.
    """
    if "prefix" in kwargs:
        line_prefix = f"[{kwargs['prefix']}]: ".encode("utf-8")
        kwargs.pop("prefix")
    else:
        line_prefix = b""

    process = subprocess.Popen(
        processargs,
        **kwargs,
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
    )

    timeout_timer = None
    if timeout is not None and timeout > 0:
        timeout_timer = threading.Timer(timeout, process.kill)
        timeout_timer.start()

    for line in iter(lambda: process.stdout.readline(), b""):
        sys.stdout.buffer.write(line_prefix + line)
        sys.stdout.flush()

    if timeout_timer is not None:
        timeout_timer.cancel()

    # stdout is drained, so the process has exited or been killed
    return process.wait()
