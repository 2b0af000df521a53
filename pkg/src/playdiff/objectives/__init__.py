"""Guidance layer: rule objectives, pitch control, DSL, value model, hooks."""

from .rules import NEEDS_OPPONENTS, RULE_IDS, RuleObjective, RuleParams, rule_score
from .pitchcontrol import PitchControlConfig, pcv_score, pitch_control_field
from .dsl import DslError, GuidanceProgram, dsl_eval, dsl_parse, pretty_print
from .prompt import GeneratorError, external_program_hook, prompt_template, render_prompt
from .value import ValueModelSpec, attacking_returns, train_value
from .hooks import (
    DEFAULT_SCALES,
    CompositeObjective,
    DSLObjective,
    GuidanceHook,
    PCVObjective,
    ValueGuidanceHook,
    make_hook,
    objective_presets,
    team_mask,
)
