#pragma once

#include <cstddef>
#include <functional>
#include <string_view>

namespace mrsl {

using MessageSink = std::function<void(std::string_view)>;

/// Installs the sink that receives library warnings. The default sink drops
/// them; warnings are always counted.
void set_warning_sink(MessageSink sink);
void warn(std::string_view message);
std::size_t warning_count() noexcept;

}  // namespace mrsl
