import os
import re

from langchain.prompts import PromptTemplate

from src import settings

SYSTEM_PROMPT_FILE = os.path.join(settings.DATA_DIR, "prompts", "system.txt")

# Exact bytes matter here: live runs send this text unchanged.
with open(SYSTEM_PROMPT_FILE, encoding="utf-8", newline="") as f:
    SYSTEM_PROMPT = f.read()

# Baseline phrasings for whole-action questions
success_template = PromptTemplate(
    input_variables=["action"],
    template="Did the robot successfully {action}?",
)

affordance_template = PromptTemplate(
    input_variables=["action"],
    template="Is it possible to {action} here?",
)

# Text-only stand-in for the camera image, clearly marked as such
scene_digest_template = PromptTemplate(
    input_variables=["facts"],
    template="""[symbolic scene digest, not an image]
The agent currently sees:
{facts}""",
)

_SYNSET_SUFFIX = re.compile(r"-n-\d+")


def humanize(name: str) -> str:
    """`hard__boiled_egg-n-01` -> `hard-boiled egg`."""
    return _SYNSET_SUFFIX.sub("", name).replace("__", "-").replace("_", " ")


def describe_action(name: str, args) -> str:
    words = [name.replace("_", " ")] + [humanize(a) for a in args if humanize(a) != "agent"]
    return " ".join(words)
