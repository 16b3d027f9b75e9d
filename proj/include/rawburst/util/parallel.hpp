#pragma once

#include <functional>

namespace rawburst {

/// Worker cap for parallel_for; 0 means one worker per hardware thread.
void set_thread_count(int n);
int thread_count();

/// Runs fn(i) for i in [0, n). Each index must write only its own outputs.
void parallel_for(int n, const std::function<void(int)>& fn);

} // namespace rawburst
