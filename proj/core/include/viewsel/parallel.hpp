#pragma once

namespace viewsel {

/// Sets the worker count used by every parallel kernel. Values < 1 restore
/// the runtime default. Results never depend on the worker count.
void set_num_threads(int n);
int num_threads();

/// Applies VIEWSEL_THREADS from the environment, if set and positive.
void apply_thread_env();

}  // namespace viewsel
