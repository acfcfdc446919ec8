#include "fedvln/server.hpp"

namespace fedvln {

void server_apply(ServerState& server, std::vector<WeightedUpdate> updates, double eta) {
    server.global = aggregate(server.global, std::move(updates), eta);
    ++server.round;
}

} // namespace fedvln
