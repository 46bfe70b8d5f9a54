import os

from dotenv import find_dotenv, load_dotenv

load_dotenv(find_dotenv())

PACKAGE_DIR = os.path.dirname(os.path.abspath(__file__))
DATA_DIR = os.getenv("DATA_DIR", os.path.join(PACKAGE_DIR, "data"))
DOMAIN_FILE = os.getenv("DOMAIN_FILE", os.path.join(DATA_DIR, "domains", "omnigibson.pddl"))
PROBLEMS_DIR = os.getenv("PROBLEMS_DIR", os.path.join(DATA_DIR, "problems"))
BENCH_CONFIG = os.getenv("BENCH_CONFIG", os.path.join(DATA_DIR, "bench.env"))

LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING")

# Search and episode budgets
PLANNER_NODE_BUDGET = int(os.getenv("PLANNER_NODE_BUDGET", "1000000"))
PLANNER_MEMO_SIZE = int(os.getenv("PLANNER_MEMO_SIZE", "4096"))  # remembered (belief, goal) -> plan entries per task
MAX_REPLANS = int(os.getenv("MAX_REPLANS", "25"))
STEP_FACTOR = int(os.getenv("STEP_FACTOR", "10"))  # max_steps = STEP_FACTOR * initial plan length

# Simulator and lost-object localisation
LOCATABLE_TYPES = tuple(os.getenv("LOCATABLE_TYPES", "movable").split())
LOCATION_PREDICATES = tuple(os.getenv("LOCATION_PREDICATES", "inside ontop onfloor").split())
EXTRA_CONSTRAINTS = tuple(os.getenv("EXTRA_CONSTRAINTS", "").split())  # any of: sink-filled content-inside content-filled

# Live VLM endpoint; the key itself is read from the variable named by VLM_API_KEY_ENV
VLM_ENDPOINT = os.getenv("VLM_ENDPOINT", "https://api.openai.com/v1/chat/completions")
VLM_MODEL = os.getenv("VLM_MODEL", "gpt-4-turbo")
VLM_API_KEY_ENV = os.getenv("VLM_API_KEY_ENV", "OPENAI_API_KEY")
VLM_TIMEOUT = float(os.getenv("VLM_TIMEOUT", "30"))
VLM_RETRIES = int(os.getenv("VLM_RETRIES", "3"))
VLM_BACKOFF = float(os.getenv("VLM_BACKOFF", "1.0"))
VLM_MIN_INTERVAL = float(os.getenv("VLM_MIN_INTERVAL", "0"))
FLOOR_TYPE = os.getenv("FLOOR_TYPE", "floor")  # dropped objects land on the first object of this type
SUPPORT_TYPES = tuple(os.getenv("SUPPORT_TYPES", "furniture movable").split())  # where a lost object may be found
