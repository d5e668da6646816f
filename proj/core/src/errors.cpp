#include "smoothcert/errors.hpp"

namespace smoothcert {

void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const RemoteError& e) {
    throw RemoteError(context + ": " + e.what(), e.status);
  } catch (const TransportError& e) {
    throw TransportError(context + ": " + e.what());
  } catch (const ProtocolError& e) {
    throw ProtocolError(context + ": " + e.what());
  } catch (const ParameterError& e) {
    throw ParameterError(context + ": " + e.what());
  } catch (const ContractError& e) {
    throw ContractError(context + ": " + e.what());
  } catch (const CapacityError& e) {
    throw CapacityError(context + ": " + e.what());
  } catch (const PersistenceError& e) {
    throw PersistenceError(context + ": " + e.what());
  } catch (const IngestionError& e) {
    throw IngestionError(context + ": " + e.what());
  } catch (const Error& e) {
    throw Error(context + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(context + ": " + e.what());
  }
}

}  // namespace smoothcert
