// SPDX-License-Identifier: Apache-2.0
#ifndef NPFORM_LOG_HPP
#define NPFORM_LOG_HPP

#include <string>

namespace npf::log {

enum class Level { Error = 0, Info = 1, Debug = 2 };

/// Threshold read once from DIRICHLET_P_LOG (error|info|debug, default error).
Level threshold();
void set_threshold(Level l);
bool enabled(Level l);
void write(Level l, const std::string& msg);

inline void error(const std::string& m) { write(Level::Error, m); }
inline void info(const std::string& m) { write(Level::Info, m); }
inline void debug(const std::string& m) { write(Level::Debug, m); }

}  // namespace npf::log

#endif  // NPFORM_LOG_HPP
