# A contact list whose rows change on every visit: raw snapshots never
# repeat, but the abstract view stays at one node per screen.

from guiknow import Explorer, ExplorerConfig, MockEnv, load_fixture, run_random_baseline

spec = load_fixture("dynamic_list")
budget = 500

res = Explorer(MockEnv(spec, 0), ExplorerConfig(max_steps=budget, on_exhausted="revisit")).run()
k = res.knowledge
raw = {s.state.state_id for s in k.trace}
print("engine: abstract states", len(k.abstract_states), "raw snapshots", len(raw))

base = run_random_baseline(spec, budget, seed=0)
print("random: distinct raw screens", len(base.raw_state_keys))

# tokens stop growing once every screen has been registered
log = res.coverage.log
for step in (10, 50, 100, 250, 500):
    print(f"step {step:>3}  tokens {log[step - 1].tokens:>5}  queries {log[step - 1].queries}")
