#include "support.h"

#include <unistd.h>

namespace ser::testing {

long TempDir::getpid_portable() { return static_cast<long>(::getpid()); }

}  // namespace ser::testing
