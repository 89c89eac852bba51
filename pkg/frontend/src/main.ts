import { createApp } from './app';
import { httpTransport } from './transport';
import './style.css';

const mount = document.querySelector('#app');
if (mount) {
  const app = createApp(httpTransport(''), { window });
  mount.replaceChildren(app.element);
  void app.start();
}
