######################################################
# Copyright (c) Mixed ADER-DG developers.
# This code is licensed under the MIT License (MIT).
# THIS CODE IS PROVIDED *AS IS* WITHOUT WARRANTY OF
# ANY KIND, EITHER EXPRESS OR IMPLIED, INCLUDING ANY
# IMPLIED WARRANTIES OF FITNESS FOR A PARTICULAR
# PURPOSE, MERCHANTABILITY, OR NON-INFRINGEMENT.
######################################################
import concurrent.futures
from typing import Callable, Iterable, Optional


class Worker:
    """Runs independent jobs, in a process pool when jobs > 1.

    Results come back in submission order whatever the completion order.
    """

    def __init__(self, action: Callable, jobs: int = 1):
        self.action = action
        self.jobs = max(1, int(jobs))

    def run(self, tasks: Iterable, progress: Optional[Callable[[int], None]] = None):
        tasks = list(tasks)
        results = [None] * len(tasks)
        if progress is not None:
            progress(0)
        if self.jobs == 1:
            for index, task in enumerate(tasks):
                results[index] = self.action(task)
                if progress is not None:
                    progress(int(100 * (index + 1) / len(tasks)))
            return results
        with concurrent.futures.ProcessPoolExecutor(max_workers=self.jobs) as pool:
            futures = {
                pool.submit(self.action, task): index
                for index, task in enumerate(tasks)
            }
            for done, future in enumerate(concurrent.futures.as_completed(futures), 1):
                results[futures[future]] = future.result()
                if progress is not None:
                    progress(int(100 * done / len(tasks)))
        return results
