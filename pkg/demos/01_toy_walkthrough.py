# Twenty users, one word each. Three words are popular, the rest are unique.
# Every round samples ten users and keeps prefixes with at least two votes.

from collections import Counter

from triehh import ProtocolParams, UserDataset, extract_prefixes, run_single_word

words = ["star"] * 3 + ["sun"] * 4 + ["moon"] * 4
words += ["apple", "bread", "cloud", "delta", "eagle", "flute", "grape", "house", "igloo"]
users = UserDataset.from_words(words)
params = ProtocolParams(theta=2, m=10)

# One run, round by round. Seed 6 learns both sun$ and moon$; many seeds learn less.
report = run_single_word(users, params, seed=6)
for r in report.rounds:
    print(f"round {r.level}: tally {r.tally} -> added {sorted(r.added)}")
print("learned words:", report.words)
print("all prefixes:", extract_prefixes(report.trie))

# The unique words can never collect two votes; the popular ones usually do.
found = Counter()
for seed in range(1000):
    found.update(run_single_word(users, params, seed, keep_rounds=False).words)
for w, c in found.most_common():
    print(f"{w:8s} found in {c / 10:.1f}% of 1000 runs")
