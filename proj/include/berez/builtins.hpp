// Built-in scenario texts shipped with the command line tool.
#pragma once

#include <string>
#include <vector>

namespace berez {

struct BuiltinExample {
  std::string name;
  std::string title;
  std::string text;
};

const std::vector<BuiltinExample>& builtin_examples();
// nullptr when no builtin has that name
const BuiltinExample* find_example(const std::string& name);

}  // namespace berez
