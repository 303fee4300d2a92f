"""Reference computations kept independent of the simulator's code paths."""

import numpy as np

EDGE_WARM = [223, 273, 366, 464, 540, 644, 837, 947]
RPI_WARM = [597, 613, 651, 860, 1071, 1290]
SIZES_KB = [29, 87, 133, 172, 259]
SIZE_RUNTIMES = [223, 417, 615, 798, 1163]
LOADS = [0.0, 0.25, 0.5, 0.75, 1.0]
EDGE_LOAD_TIMES = [223, 284, 312, 350, 374]


def interp(x, xs, ys):
    return float(np.interp(x, xs, ys))


def fifo_latencies(arrivals_ms, servers, service_by_concurrency):
    """Latency of each job in a FIFO queue with ``servers`` identical servers.

    A job's service time is fixed when it starts, looked up by how many jobs
    (itself included) are in service at that moment. Jobs whose service ends
    exactly at the start instant no longer count.
    """
    free_at = [0.0] * servers
    intervals = []
    latencies = []
    for arrival in arrivals_ms:
        k = min(range(servers), key=lambda i: free_at[i])
        start = max(arrival, free_at[k])
        concurrent = 1 + sum(1 for s, e in intervals if s <= start < e)
        end = start + service_by_concurrency[concurrent - 1]
        free_at[k] = end
        intervals.append((start, end))
        latencies.append(end - arrival)
    return latencies
