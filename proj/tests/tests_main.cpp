#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "selbounds/support.hpp"

namespace {
void quiet(const std::string&) {}
const bool installed = [] {
    selbounds::warnings::set_handler(&quiet);
    return true;
}();
} // namespace
