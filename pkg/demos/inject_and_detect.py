"""
Injecting faults and finding them again
=======================================

Each injected fault comes with the anomaly it should cause. Analyzing the
damaged stream must report exactly those anomalies.
"""

from collections import Counter

from dvbts import ErrorKind, ErrorSpec, analyze_source, generate, inject_errors, replica_spec

clean = generate(replica_spec()).data

# indices of video packets that carry payload
video = [i for i in range(len(clean) // 188)
         if ((clean[i * 188 + 1] & 0x1F) << 8 | clean[i * 188 + 2]) == 520 and clean[i * 188 + 3] & 0x10]

errors = [
    ErrorSpec(ErrorKind.CC_GAP, 520, (video[100],)),
    ErrorSpec(ErrorKind.CC_DUPLICATE, 520, (video[900],)),
    ErrorSpec(ErrorKind.TEI_FLAG, 520, (video[1500],)),
    ErrorSpec(ErrorKind.SYNC_CORRUPT, None, (3000,)),
]
damaged, ledger = inject_errors(clean, errors)

for entry in ledger:
    print(f"injected {entry.kind.value:<12} at {entry.source_index:>5} -> expect {entry.expected.value}")

report = analyze_source(damaged)
for event in report.anomalies:
    print(event.describe())

# the two multisets agree when nothing went unexplained
expected = Counter((e.expected.value, e.pid) for e in ledger)
observed = Counter((a.kind.value, a.pid) for a in report.anomalies)
print("ledger matches report:", expected == observed)
