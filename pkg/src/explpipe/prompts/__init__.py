from explpipe.prompts.assemble import (
    AssembledPrompt,
    BudgetOverflowError,
    PoolExhaustedError,
    PromptConfig,
    assemble_prompt,
    derive_rng,
    estimate_tokens,
    reset_token_counter,
    set_token_counter,
)
from explpipe.prompts.templates import (
    PromptTemplate,
    label_vocabulary,
    load_template,
    render_mcqa_block,
    render_nli_block,
)

__all__ = [
    "AssembledPrompt",
    "BudgetOverflowError",
    "PoolExhaustedError",
    "PromptConfig",
    "PromptTemplate",
    "assemble_prompt",
    "derive_rng",
    "estimate_tokens",
    "label_vocabulary",
    "load_template",
    "render_mcqa_block",
    "render_nli_block",
    "reset_token_counter",
    "set_token_counter",
]
