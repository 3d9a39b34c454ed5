from .dataset import (
    InstanceSkipped,
    TrainingInstance,
    build_training_instance,
    instances_from_log,
    read_dataset,
    write_dataset,
)
from .pipeline import (
    BaseParseError,
    CandidateGroup,
    GroupSampleError,
    Intent,
    IntentParseError,
    MissingFollowerRole,
    PersuasionError,
    RefineParseError,
    RewardMode,
    SpeakingContext,
    all_modes,
    combine,
    follower_logprobs,
    generate_base,
    identify_intent,
    measure_group,
    measure_reward,
    measurement_prompt,
    refine,
    refine_prompt,
    sample_group,
)
from .prompts import PLACEHOLDERS, PromptTemplate, TemplateError, assistant_prefix, load_template, parse_fields
