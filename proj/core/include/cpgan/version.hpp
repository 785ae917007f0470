#pragma once

namespace cpgan {

// git-describe style version, baked in at configure time.
const char* version_string();

}  // namespace cpgan
