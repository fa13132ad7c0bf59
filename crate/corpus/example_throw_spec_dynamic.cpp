// VERDICT: FAILED
// PROPERTY: throw specification violation
void func() throw(int, double) {
  throw 'c';
}

int main() {
  try {
    func();
  } catch (...) {
  }
  return 0;
}
