"""Prompt rendering and the pluggable external program generator.

The generator command (``PLAYDIFF_DSL_GENERATOR`` or an explicit argument)
receives the rendered prompt on stdin and must emit a guidance-DSL
program on stdout.  Without a generator, programs are read from a file.
"""

from __future__ import annotations

import os
import shlex
import subprocess
from importlib import resources

from .dsl import DslError, GuidanceProgram, dsl_parse

GENERATOR_ENV = "PLAYDIFF_DSL_GENERATOR"


class GeneratorError(RuntimeError):
    pass


def prompt_template() -> str:
    return resources.files("playdiff.objectives").joinpath("prompt_template.txt").read_text(encoding="utf-8")


def render_prompt(guided_team: str, objective_text: str) -> str:
    return prompt_template().replace("{guided_team}", guided_team).replace("{your_objective}", objective_text)


def external_program_hook(
    objective_text: str,
    guided_team: str,
    generator_command: str | None = None,
    program_path=None,
    timeout: float = 120.0,
) -> GuidanceProgram:
    """Obtain a guidance program for a natural-language objective.

    Renders the prompt, pipes it to the configured external generator and
    parses its stdout; parse failures are reported verbatim.  With no
    generator configured, the program text is read from ``program_path``.
    """
    command = generator_command or os.environ.get(GENERATOR_ENV)
    if command:
        prompt = render_prompt(guided_team, objective_text)
        try:
            proc = subprocess.run(
                shlex.split(command),
                input=prompt.encode("utf-8"),
                capture_output=True,
                timeout=timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise GeneratorError(f"external generator failed to run: {exc}") from exc
        if proc.returncode != 0:
            raise GeneratorError(
                f"external generator exited with status {proc.returncode}: {proc.stderr.decode('utf-8', 'replace').strip()}"
            )
        text = proc.stdout.decode("utf-8")
    elif program_path is not None:
        with open(program_path, encoding="utf-8") as fh:
            text = fh.read()
    else:
        raise GeneratorError(
            f"no generator configured: set {GENERATOR_ENV} or pass a program file path"
        )
    try:
        return dsl_parse(text)
    except DslError as exc:
        raise GeneratorError(f"generated program rejected: {exc}") from exc
