#include <iostream>

#include "CLI11.hpp"
#include "dseg/errors.hpp"
#include "dseg/llm.hpp"
#include "dseg/util.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Offline chat-completion server answering from canned responses"};
  std::string responses_path;
  std::string host = "127.0.0.1";
  int port = 8080;
  app.add_option("--responses", responses_path, "Canned responses JSON")->required();
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "Port");
  CLI11_PARSE(app, argc, argv);
  try {
    auto j = nlohmann::json::parse(dseg::read_file(responses_path));
    dseg::MockChatServer server(dseg::CannedResponses::from_json(j));
    std::cerr << "serving on http://" << host << ":" << port << "/v1/chat/completions\n";
    server.listen(host, port);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
