"""
Extracting elementary streams
=============================

Write every video, audio and private stream of the replica to its own file
and compare the byte counts with what the generator put in.
"""

import tempfile
from pathlib import Path

from dvbts import generate, replica_spec
from dvbts.demux import demux_to_sinks

stream = generate(replica_spec(duration_s=0.5))
work = Path(tempfile.mkdtemp(prefix="dvbts-demo-"))
source = work / "replica.ts"
source.write_bytes(stream.data)

# the English audio gets a friendlier name, the rest use <stem>_pid<PID>.es
summaries = demux_to_sinks(source, out_dir=work, names={730: "eng.mp2"})

truth = stream.truth.es_bytes()
for pid, s in sorted(summaries.items()):
    print(f"PID {pid:>4}: {s.pes_count:>3} PES, {s.bytes_written:>7} bytes "
          f"(generated {truth.get(pid, 0)}) -> {Path(s.path).name}")
