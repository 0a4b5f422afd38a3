#pragma once

namespace hct {

// Worker-thread count used by all data-parallel kernels. Defaults to the
// hardware concurrency; the HELICAL_THREADS environment variable or an
// explicit set_num_threads call overrides it.
int num_threads();
void set_num_threads(int n);

}  // namespace hct
