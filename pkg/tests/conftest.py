import os

from persistprobe.buslogger import Trace, TraceRecord
from persistprobe.litmus import load_litmus

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
LITMUS = os.path.join(ROOT, "litmus")
SEQ_ARM = os.path.join(LITMUS, "sequential_arm.litmus")
SEQ_X86 = os.path.join(LITMUS, "sequential_x86.litmus")


def seq_arm():
    return load_litmus(SEQ_ARM)


def seq_x86():
    return load_litmus(SEQ_X86)


def trace_of(addrs):
    return Trace([TraceRecord(i, a) for i, a in enumerate(addrs)])
