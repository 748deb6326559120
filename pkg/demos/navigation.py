# Build a tiny interaction graph by hand and ask for routes through it.

from guiknow.explorer import find_navigate_path, repair_navigation
from guiknow.knowledge import Knowledge, register_abstract_state
from guiknow.ui import parse_snapshot


def screen(i):
    return parse_snapshot({
        "state_id": f"s{i}", "activity": f"Screen{i}", "source_app": "com.demo",
        "elements": [{"element_id": 1, "class": "Button", "resource_id": f"go{i}", "touchable": True,
                      "path": [0]}],
    })


k = Knowledge("com.demo")
for i in range(4):
    register_abstract_state(k, screen(i))
k.initial_state_id = 0

# 0 -> 1 -> 2 -> 3 and a shortcut 0 -> 2
for src, dst in [(0, 1), (1, 2), (2, 3), (0, 2)]:
    k.graph.add_edge(src, src, dst)

target = k.abstract_actions[3]  # the button on screen 3
plan = find_navigate_path(k, 0, target)
print([(st.expected_state, st.action_id, st.expected_next) for st in plan.steps])

# pretend the shortcut misfired and left us on screen 1
plan = repair_navigation(k, plan, 1)
print("after repair:", [(st.expected_state, st.expected_next) for st in plan.steps])
print("failures on shortcut:", k.graph.edges[(0, 0, 2)].failures)

# from the dead end, the only way back is a restart (action None)
plan = find_navigate_path(k, 3, k.abstract_actions[1])
print([(st.expected_state, st.action_id, st.expected_next) for st in plan.steps])
