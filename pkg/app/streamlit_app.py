import os
import sys

import pandas as pd
import streamlit as st

# Ensure correct path resolution for imports
sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

from src.monitor import EpisodeConfig, Monitor, Strategy
from src.perception import PerceptionConfig
from src.planner import format_sas_plan
from src.tasks import TASKS, load_task
from src.world import load_situations, without_situations


@st.cache_resource
def get_monitor(task: str) -> Monitor:
    domain, problem = load_task(task)
    return Monitor(domain, problem)


def main():
    st.set_page_config(page_title="Plan Monitor", page_icon="🤖")

    st.title("🤖 Plan Monitor Episode Viewer")

    if st.button("Clear Cache"):
        st.cache_resource.clear()
        st.rerun()

    with st.form("episode_form"):
        task = st.selectbox("Task", [t.name for t in TASKS], format_func=lambda n: next(t.label for t in TASKS if t.name == n))
        strategy = st.selectbox("Strategy", [s.value for s in Strategy])
        seed = st.number_input("Seed", min_value=0, value=0, step=1)
        flip_rate = st.slider("Flip rate", 0.0, 1.0, 0.0, 0.05)
        skip_rate = st.slider("Skip rate", 0.0, 1.0, 0.0, 0.05)
        situations_on = st.checkbox("Inject situations", value=True)
        submit = st.form_submit_button("Run episode")

    if not submit:
        return

    try:
        monitor = get_monitor(task)
        situations = load_situations() if situations_on else without_situations(load_situations())
        cfg = EpisodeConfig(Strategy(strategy), PerceptionConfig(flip_rate, skip_rate), situations)
        with st.spinner("Running..."):
            result = monitor.run(cfg, int(seed))
    except Exception as e:
        st.error(f"❌ Error: {e}")
        st.exception(e)
        return

    if result.success:
        st.success(f"✅ Goal reached after {result.steps} steps and {result.replans} replans")
    else:
        st.warning(f"⚠️ {result.reason} after {result.steps} steps and {result.replans} replans")

    with st.expander(f"Initial plan ({result.initial_plan_length} steps)"):
        st.code(format_sas_plan(monitor.planner.solve(monitor.problem.init).steps))

    rows = [
        {
            "step": e.step,
            "kind": e.kind,
            "action": e.action or "",
            "outcome": e.outcome or "",
            "questions": " | ".join(f"{q} → {a}" for q, a in e.qa),
            "added": ", ".join(e.added),
            "removed": ", ".join(e.removed),
        }
        for e in result.events
    ]
    st.dataframe(pd.DataFrame(rows), use_container_width=True)


if __name__ == "__main__":
    main()
